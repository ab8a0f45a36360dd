"""
File utilities for stepflow-lab
Handles output directories, encoding-aware config reading and deterministic writers
"""
import csv
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import chardet

OUTPUT_ENV_VAR = "STEPFLOW_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "stepflow_output"


class FileUtils:
    """Utility class for file operations"""

    @staticmethod
    def default_output_root() -> str:
        """Output root from $STEPFLOW_OUTPUT_DIR, else ./stepflow_output"""
        return os.environ.get(OUTPUT_ENV_VAR) or DEFAULT_OUTPUT_DIR

    @staticmethod
    def get_safe_filename(filename: str) -> str:
        """Generate a safe filename by removing/replacing invalid characters"""
        invalid_chars = '<>:"/\\|?* '
        safe_name = filename
        for char in invalid_chars:
            safe_name = safe_name.replace(char, '_')
        return safe_name

    @staticmethod
    def run_directory(root: str, prefix: str, command: str) -> Path:
        """Create (if needed) and return {root}/{prefix}-{command}"""
        path = Path(root) / FileUtils.get_safe_filename(f"{prefix}-{command}")
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def detect_text_encoding(file_path: str) -> str:
        """Detect text file encoding"""
        try:
            with open(file_path, 'rb') as file:
                raw_data = file.read()
                result = chardet.detect(raw_data)
                return result.get('encoding', 'utf-8') or 'utf-8'
        except OSError:
            return 'utf-8'

    @staticmethod
    def read_text(file_path: str) -> str:
        """Read a text file in its detected encoding"""
        encoding = FileUtils.detect_text_encoding(file_path)
        with open(file_path, 'r', encoding=encoding, errors='replace') as file:
            return file.read()

    @staticmethod
    def format_float(value: float) -> str:
        """17 significant digits, '.' decimal separator"""
        return format(float(value), '.17g')

    @staticmethod
    def _cell(value: Any) -> str:
        if isinstance(value, (bool, str, int)):
            return str(value)
        try:
            return FileUtils.format_float(value)
        except (TypeError, ValueError):
            return str(value)

    @staticmethod
    def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """Write a CSV with '\\n' line endings and fixed float formatting"""
        with open(path, 'w', encoding='utf-8', newline='') as file:
            writer = csv.writer(file, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([FileUtils._cell(value) for value in row])
        return path

    @staticmethod
    def jsonable(value: Any) -> Any:
        """Plain JSON types; numpy scalars unwrapped, non-finite floats as strings"""
        if isinstance(value, dict):
            return {str(key): FileUtils.jsonable(item) for key, item in value.items()}
        if isinstance(value, (list, tuple)):
            return [FileUtils.jsonable(item) for item in value]
        if isinstance(value, bool) or value is None or isinstance(value, str):
            return value
        if isinstance(value, int):
            return value
        if hasattr(value, 'item'):
            return FileUtils.jsonable(value.item())
        if isinstance(value, float):
            if value != value or value in (float('inf'), float('-inf')):
                return str(value)
            return value
        return str(value)

    @staticmethod
    def to_json(data: Dict[str, Any]) -> str:
        """Deterministic JSON text (sorted keys, non-finite floats as strings)"""
        return json.dumps(FileUtils.jsonable(data), sort_keys=True, indent=2)

    @staticmethod
    def write_json(path: Path, data: Dict[str, Any]) -> Path:
        with open(path, 'w', encoding='utf-8', newline='\n') as file:
            file.write(FileUtils.to_json(data))
            file.write('\n')
        return path

    @staticmethod
    def list_outputs(directory: Path, suffixes: Optional[List[str]] = None) -> List[str]:
        """Names of the files written into a run directory"""
        suffixes = suffixes or ['.csv', '.json']
        return sorted(path.name for path in Path(directory).iterdir() if path.suffix in suffixes)
