#!/usr/bin/env python3
"""
stepflow-lab - Demonstration Script
Walks through the discrete model, the continuum energies and a small
consistency study without the batch driver
"""
import sys
import tempfile
from pathlib import Path

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))

import numpy as np

from core.analysis import consistency_report, stability_probe, uniform_train
from core.continuum import energy_bundle, integrate_pde
from core.geometry import HeightProfile, build_height_field, height_to_phi, sample_step_train
from core.mesoscopic import PotentialVariant, discrete_energy, integrate_ode
from utils.file_utils import FileUtils

PROFILE = HeightProfile(A=0.2)


def demo_step_train():
    """Sample a train from the test profile and relax it"""
    print("🔄 Discrete step train...")
    phi = height_to_phi(build_height_field(PROFILE, 1.0, 128), 128)
    train = sample_step_train(phi, 32)
    print(f"  ✓ Sampled N={train.N} steps, smallest terrace {train.min_spacing:.4e}")

    for variant in PotentialVariant:
        trajectory = integrate_ode(train, 1e-4, variant=variant)
        energies = trajectory.energies()
        print(f"  • {variant.value:18s} E: {energies[0]:.10f} -> {energies[-1]:.10f} "
              f"({trajectory.accepted_steps} steps)")
    return train


def demo_energies(output_dir: Path):
    """Energies of the same surface in every formulation"""
    print("\n📐 Continuum energies...")
    h = build_height_field(PROFILE, 1.0, 256)
    bundle = energy_bundle(h, 256)
    for name in ("E_h", "E_h_bar", "W", "E_rho", "E_u", "E_phi"):
        print(f"  • {name:8s} {getattr(bundle, name): .12f}")
    for name, residual in bundle.cross_residuals.items():
        print(f"  ✓ |{name}| = {residual:.2e}")
    FileUtils.write_json(output_dir / "energies.json", {
        "E_h": bundle.E_h, "E_phi": bundle.E_phi, "cross_residuals": bundle.cross_residuals,
    })

    trajectory = integrate_pde(build_height_field(PROFILE, 1.0, 64), 1e-4)
    print(f"  ✓ h-form run: E_h {trajectory.energies()[0]:.10f} -> "
          f"{trajectory.energies()[-1]:.10f}")


def demo_consistency(output_dir: Path):
    """Orders of the corrected discrete operators"""
    print("\n📊 Consistency orders...")
    report = consistency_report(PROFILE, (32, 64, 128))
    for family, estimate in report.orders.items():
        print(f"  • {family:16s} {estimate.order:6.2f} ({estimate.status})")
    FileUtils.write_csv(output_dir / "consistency.csv", ("family", "N", "a", "residual"),
                        ((r.family, r.N, r.a, r.residual) for r in report.records))
    print("✅ Passed" if report.passed else "⚠️  Some orders below threshold")


def demo_stability():
    """Perturbations of the uniform train decay"""
    print("\n🧪 Stability of the uniform train...")
    base = uniform_train(16)
    z0 = np.sin(2.0 * np.pi * np.arange(16) / 16)
    result = stability_probe(base, z0, 1e-4)
    print(f"  ✓ Growth factor {result.growth_factor:.6f}, final ratio {result.ratios[-1]:.3e}")
    print(f"  • Uniform energy {discrete_energy(base):.12f}")


def main():
    """Run the demonstration"""
    print("stepflow-lab - Demonstration")
    print("=" * 40)
    output_dir = Path(tempfile.gettempdir()) / "stepflow_demo"
    output_dir.mkdir(exist_ok=True)

    try:
        demo_step_train()
        demo_energies(output_dir)
        demo_consistency(output_dir)
        demo_stability()
    except Exception as e:
        print(f"\n❌ Demonstration failed: {e}")
        import traceback
        traceback.print_exc()
        return 1

    print(f"\n📂 Outputs in {output_dir}: {', '.join(FileUtils.list_outputs(output_dir))}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
