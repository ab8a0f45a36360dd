"""
Run configuration for the batch driver

Values come from built-in defaults, an optional flat `section.key = value`
file, and `--section.key=value` overrides, in increasing precedence. Every
key is validated here; unknown keys are rejected with the key in the message.
"""
import logging
from dataclasses import asdict, dataclass, replace
from typing import Callable, Dict, Iterable, Optional, Tuple

from core import spectral
from core.errors import ConfigError, GridSizeError
from core.geometry import DomainParams, HeightProfile
from core.integrators import METHODS, IntegratorOptions
from core.mesoscopic import PotentialVariant
from utils.file_utils import FileUtils

LOGGER = logging.getLogger(__name__)

FORMULATIONS = ("h", "phi")


def _sweep(text: str) -> Tuple[int, ...]:
    values = tuple(int(part) for part in str(text).split(",") if part.strip())
    if not values:
        raise ValueError("empty list")
    return values


def _choice(options: Iterable[str]) -> Callable[[str], str]:
    options = tuple(options)

    def parse(text: str) -> str:
        text = str(text).strip()
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


DEFAULTS: Dict[str, str] = {
    "domain.L": "1.0",
    "domain.M": "128",
    "domain.K": "128",
    "profile.A": "0.2",
    "profile.k": "1",
    "ode.N": "32",
    "ode.N_sweep": "16,32,64,128",
    "ode.variant": "standard",
    "ode.T": "1e-3",
    "ode.method": "imex",
    "ode.rtol": "1e-8",
    "ode.atol": "1e-10",
    "ode.dt_max": "1e-4",
    "ode.collision_eps": "0.05",
    "pde.formulation": "h",
    "pde.T": "1e-3",
    "pde.method": "imex",
    "pde.rtol": "1e-8",
    "pde.atol": "1e-10",
    "pde.dt_max": "1e-4",
    "consistency.N_sweep": "32,64,128,256",
    "consistency.M": "128",
    "output.directory": "",
    "output.prefix": "run",
    "output.snapshot_stride": "10",
}

PARSERS: Dict[str, Callable[[str], object]] = {
    "domain.L": float,
    "domain.M": int,
    "domain.K": int,
    "profile.A": float,
    "profile.k": int,
    "ode.N": int,
    "ode.N_sweep": _sweep,
    "ode.variant": _choice(variant.value for variant in PotentialVariant),
    "ode.T": float,
    "ode.method": _choice(METHODS),
    "ode.rtol": float,
    "ode.atol": float,
    "ode.dt_max": float,
    "ode.collision_eps": float,
    "pde.formulation": _choice(FORMULATIONS),
    "pde.T": float,
    "pde.method": _choice(METHODS),
    "pde.rtol": float,
    "pde.atol": float,
    "pde.dt_max": float,
    "consistency.N_sweep": _sweep,
    "consistency.M": int,
    "output.directory": str,
    "output.prefix": str,
    "output.snapshot_stride": _positive_int,
}


@dataclass(frozen=True)
class DomainSection:
    L: float
    M: int
    K: int


@dataclass(frozen=True)
class OdeSection:
    N: int
    N_sweep: Tuple[int, ...]
    variant: str
    T: float
    method: str
    rtol: float
    atol: float
    dt_max: float
    collision_eps: float


@dataclass(frozen=True)
class PdeSection:
    formulation: str
    T: float
    method: str
    rtol: float
    atol: float
    dt_max: float


@dataclass(frozen=True)
class ConsistencySection:
    N_sweep: Tuple[int, ...]
    M: int


@dataclass(frozen=True)
class OutputSection:
    directory: str
    prefix: str
    snapshot_stride: int


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved and validated configuration of one run"""

    domain: DomainSection
    profile: HeightProfile
    ode: OdeSection
    pde: PdeSection
    consistency: ConsistencySection
    output: OutputSection

    @property
    def variant(self) -> PotentialVariant:
        return PotentialVariant.parse(self.ode.variant)

    def ode_options(self, **overrides) -> IntegratorOptions:
        options = IntegratorOptions(method=self.ode.method, rtol=self.ode.rtol,
                                    atol=self.ode.atol, dt_max=self.ode.dt_max,
                                    collision_eps=self.ode.collision_eps)
        return replace(options, **overrides)

    def pde_options(self, **overrides) -> IntegratorOptions:
        options = IntegratorOptions(method=self.pde.method, rtol=self.pde.rtol,
                                    atol=self.pde.atol, dt_max=self.pde.dt_max)
        return replace(options, **overrides)

    def as_dict(self) -> Dict[str, object]:
        """Flat `section.key` mapping of every resolved value"""
        flat = {}
        for section in ("domain", "profile", "ode", "pde", "consistency", "output"):
            for key, value in asdict(getattr(self, section)).items():
                flat[f"{section}.{key}"] = list(value) if isinstance(value, tuple) else value
        return flat


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """
    Parse flat `section.key = value` lines

    Blank lines and `#` comments are ignored; later lines win.
    """
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"invalid config: {source}:{number}: expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def load_config_file(path: str) -> Dict[str, str]:
    """Read a config file in its detected encoding"""
    try:
        text = FileUtils.read_text(path)
    except OSError as exc:
        raise ConfigError(f"invalid config: cannot read {path}: {exc}", key="--config") from exc
    LOGGER.debug("Loaded config file %s", path)
    return parse_config_text(text, path)


def _converted(values: Dict[str, str]) -> Dict[str, object]:
    converted = {}
    for key, text in values.items():
        if key not in PARSERS:
            raise ConfigError(f"invalid config: unknown key '{key}'", key=key)
        try:
            converted[key] = PARSERS[key](text)
        except ValueError as exc:
            raise ConfigError(f"invalid config: {key}={text!r}: {exc}", key=key) from None
    return converted


def _require_grid(value: int, key: str, minimum: int = 16):
    try:
        spectral.require_power_of_two(value, minimum=minimum, name=key)
    except GridSizeError as exc:
        raise ConfigError(f"invalid config: {exc}", key=key) from None


def _prefixed(section: str, build: Callable[[], object]):
    try:
        return build()
    except ConfigError as exc:
        key = exc.key if exc.key and "." in exc.key else f"{section}.{exc.key}"
        message = exc.message
        if key not in message:
            message = message.replace("invalid config:", f"invalid config: {key}:", 1)
        raise ConfigError(message, key=key) from None


def build_config(*layers: Optional[Dict[str, str]]) -> RunConfig:
    """
    Merge value layers over the defaults and validate

    Args:
        layers: Mappings of `section.key` to text, lowest precedence first

    Returns:
        RunConfig

    Raises:
        ConfigError: Unknown key, unparsable value or violated constraint
        ProfileError: |A| >= 1
    """
    merged = dict(DEFAULTS)
    for layer in layers:
        merged.update(layer or {})
    v = _converted(merged)
    if not v["output.directory"]:
        v["output.directory"] = FileUtils.default_output_root()

    _prefixed("domain", lambda: DomainParams(L=v["domain.L"]))
    _require_grid(v["domain.M"], "domain.M")
    _require_grid(v["domain.K"], "domain.K")
    _require_grid(v["consistency.M"], "consistency.M")
    for N in v["consistency.N_sweep"]:
        _require_grid(N, "consistency.N_sweep")
    for N in v["ode.N_sweep"]:
        _require_grid(N, "ode.N_sweep", minimum=4)
    if v["ode.N"] < 2:
        raise ConfigError(f"invalid config: ode.N={v['ode.N']} must be >= 2", key="ode.N")
    for key in ("ode.T", "pde.T"):
        if not v[key] > 0.0:
            raise ConfigError(f"invalid config: {key}={v[key]} must be positive", key=key)

    config = RunConfig(
        domain=DomainSection(v["domain.L"], v["domain.M"], v["domain.K"]),
        profile=_prefixed("profile", lambda: HeightProfile(A=v["profile.A"], k=v["profile.k"])),
        ode=OdeSection(v["ode.N"], v["ode.N_sweep"], v["ode.variant"], v["ode.T"],
                       v["ode.method"], v["ode.rtol"], v["ode.atol"], v["ode.dt_max"],
                       v["ode.collision_eps"]),
        pde=PdeSection(v["pde.formulation"], v["pde.T"], v["pde.method"], v["pde.rtol"],
                       v["pde.atol"], v["pde.dt_max"]),
        consistency=ConsistencySection(v["consistency.N_sweep"], v["consistency.M"]),
        output=OutputSection(v["output.directory"], v["output.prefix"],
                             v["output.snapshot_stride"]),
    )
    _prefixed("ode", config.ode_options)
    _prefixed("pde", config.pde_options)
    return config
