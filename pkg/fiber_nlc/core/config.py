"""Configuration management for fiber-nlc."""

import argparse
import copy
import json
import math
import os
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml
from dotenv import load_dotenv
from jsonschema import Draft7Validator

from fiber_nlc.core.errors import ConfigurationError

ENV_PREFIX = "FIBER_NLC_"
FILE_ROOT_KEY = "fiber_nlc"

_number = {"type": "number"}
_integer = {"type": "integer"}
_boolean = {"type": "boolean"}
_string = {"type": "string"}
_number_list = {"type": "array", "items": _number}


def _section(properties: Dict[str, Any]) -> Dict[str, Any]:
    return {"type": "object", "properties": properties, "additionalProperties": False}


CONFIG_SCHEMA: Dict[str, Any] = _section(
    {
        "log_level": {"enum": ["debug", "info", "warning", "error"]},
        "link": _section(
            {
                "alpha_db_per_km": _number,
                "beta2_ps2_per_km": _number,
                "gamma_per_w_per_km": _number,
                "span_length_km": _number,
                "n_spans": _integer,
                "noise_figure_db": _number,
                "center_wavelength_nm": _number,
            }
        ),
        "signal": _section(
            {
                "symbol_rate_gbaud": _number,
                "rrc_rolloff": _number,
                "rrc_span_symbols": _integer,
                "tau_over_t": _number,
            }
        ),
        "simulation": _section(
            {
                "samples_per_symbol": _integer,
                "step_size_km": _number,
                "ase_enabled": _boolean,
            }
        ),
        "coefficients": _section(
            {
                "window": _integer,
                "mu_db": _number,
                "quant_divisor": _number,
                "quadrature": _section(
                    {
                        "rule": _string,
                        "order": _integer,
                        "panels_z": _integer,
                        "panels_s": _integer,
                        "rel_tol": _number,
                        "max_doublings": _integer,
                        "screen_margin_db": _number,
                    }
                ),
            }
        ),
        "predistortion": _section(
            {
                "epsilon_fo": _number,
                "epsilon_so": _number,
                "use_term2": _boolean,
                "optimize_epsilon": _boolean,
                "epsilon_grid": _number_list,
            }
        ),
        "dbp": _section({"steps_per_span": _integer, "samples_per_symbol": _integer}),
        "complexity": _section(
            {"n_fft": _integer, "n_samples": _integer, "dbp_steps": {"type": "array", "items": _integer}}
        ),
        "experiment": _section(
            {
                "techniques": {"type": "array", "items": _string},
                "launch_power_dbm": _number_list,
                "n_frames": _integer,
                "n_symbols_per_frame": _integer,
                "seed": _integer,
                "ber_threshold": _number,
                "span_grid": {"type": "array", "items": _integer},
                "mu_grid": _number_list,
            }
        ),
        "runtime": _section(
            {
                "workers": _integer,
                "max_runtime_seconds": _number,
                "tables_dir": _string,
                "output": _string,
                "throttle_ms": _integer,
            }
        ),
    }
)


class Config:
    """Configuration manager for fiber-nlc.

    Values are merged from several sources, later ones winning:
    1. Default values (the standard single-channel 16-QAM link)
    2. Environment variables (``FIBER_NLC_*``, ``.env`` supported)
    3. Configuration file (YAML or JSON, top-level key ``fiber_nlc``)
    4. Command-line arguments and explicit overrides
    """

    DEFAULTS: Dict[str, Any] = {
        "log_level": "info",
        "link": {
            "alpha_db_per_km": 0.2,
            "beta2_ps2_per_km": -20.47,
            "gamma_per_w_per_km": 1.22,
            "span_length_km": 80.0,
            "n_spans": 35,
            "noise_figure_db": 5.5,
            "center_wavelength_nm": 1550.0,
        },
        "signal": {
            "symbol_rate_gbaud": 32.0,
            "rrc_rolloff": 0.1,
            "rrc_span_symbols": 32,
            "tau_over_t": 0.5,
        },
        "simulation": {
            "samples_per_symbol": 16,
            "step_size_km": 0.8,
            "ase_enabled": True,
        },
        "coefficients": {
            "window": 100,
            "mu_db": -40.0,
            "quant_divisor": 32.0,
            "quadrature": {
                "rule": "gauss-legendre",
                "order": 8,
                "panels_z": 4,
                "panels_s": 4,
                "rel_tol": 1e-6,
                "max_doublings": 5,
                "screen_margin_db": 6.0,
            },
        },
        "predistortion": {
            "epsilon_fo": 1.0,
            "epsilon_so": 1.0,
            "use_term2": False,
            "optimize_epsilon": False,
            "epsilon_grid": [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
        },
        "dbp": {"steps_per_span": 1, "samples_per_symbol": 2},
        "complexity": {"n_fft": 4096, "n_samples": 4096, "dbp_steps": [1, 2, 4]},
        "experiment": {
            "techniques": ["edc", "fo", "so", "dbp"],
            "launch_power_dbm": [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0],
            "n_frames": 4,
            "n_symbols_per_frame": 65536,
            "seed": 1,
            "ber_threshold": 2e-2,
            "span_grid": [20, 30, 40, 50, 60, 70, 80],
            "mu_grid": [-10.0, -20.0, -30.0, -40.0, -50.0],
        },
        "runtime": {
            "workers": 4,
            "max_runtime_seconds": 0,
            "tables_dir": "./tables",
            "output": "results.csv",
            "throttle_ms": 100,
        },
    }

    def __init__(self, config_dict: Dict[str, Any]):
        """Initialize a new Config instance.

        Args:
            config_dict: Configuration dictionary
        """
        self._config = config_dict

    @classmethod
    def load(
        cls,
        config_path: Optional[Union[str, Path]] = None,
        overrides: Optional[Dict[str, Any]] = None,
        argv: Optional[Sequence[str]] = None,
    ) -> "Config":
        """Load configuration from all sources.

        Args:
            config_path: Path to a configuration file (optional)
            overrides: Dotted-key overrides applied last, e.g. {"link.n_spans": 8}
            argv: Command-line arguments to scan (default: ``sys.argv[1:]``)

        Returns:
            A Config instance with merged configuration

        Raises:
            ConfigurationError: If a source cannot be read or the result is invalid
        """
        config = copy.deepcopy(cls.DEFAULTS)

        load_dotenv()
        cls._deep_update(config, cls._load_from_env())

        if config_path:
            cls._deep_update(config, cls._load_from_file(config_path))

        cls._deep_update(config, cls._load_from_args(argv))

        if overrides:
            cls._deep_update(config, cls.expand_dotted(overrides))

        instance = cls(config)
        errors = instance.validate()
        if errors:
            raise ConfigurationError(
                "Invalid configuration", details={"errors": errors}
            )
        return instance

    @classmethod
    def from_overrides(cls, overrides: Optional[Dict[str, Any]] = None) -> "Config":
        """Build a configuration from defaults plus dotted overrides only.

        No environment, file or command-line source is consulted.
        """
        config = copy.deepcopy(cls.DEFAULTS)
        if overrides:
            cls._deep_update(config, cls.expand_dotted(overrides))
        return cls(config)

    @staticmethod
    def schema_errors(document: Dict[str, Any]) -> List[str]:
        """Check a configuration document against the file schema.

        Args:
            document: The content under the ``fiber_nlc`` key

        Returns:
            Every schema violation as a readable string
        """
        validator = Draft7Validator(CONFIG_SCHEMA)
        errors = []
        for error in sorted(validator.iter_errors(document), key=lambda e: list(e.path)):
            location = ".".join(str(p) for p in error.path) or "<root>"
            errors.append(f"{location}: {error.message}")
        return errors

    @staticmethod
    def _load_from_file(config_path: Union[str, Path]) -> Dict[str, Any]:
        """Load configuration from a file.

        Args:
            config_path: Path to the configuration file

        Returns:
            Configuration dictionary

        Raises:
            ConfigurationError: If the file is missing, unreadable or malformed
        """
        path = Path(config_path)
        if not path.exists():
            raise ConfigurationError(f"Configuration file not found: {path}")

        try:
            with open(path, encoding="utf-8") as f:
                if path.suffix.lower() in (".yaml", ".yml"):
                    content = yaml.safe_load(f)
                elif path.suffix.lower() == ".json":
                    content = json.load(f)
                else:
                    raise ConfigurationError(
                        f"Unsupported configuration file format: {path.suffix}"
                    )
        except ConfigurationError:
            raise
        except Exception as e:
            raise ConfigurationError(f"Error loading configuration file: {e}") from e

        document = content.get(FILE_ROOT_KEY, {}) if content else {}
        if document is None:
            document = {}
        errors = Config.schema_errors(document)
        if errors:
            raise ConfigurationError(
                f"Configuration file {path} does not match the schema",
                details={"errors": errors},
            )
        return document

    @classmethod
    def _load_from_env(cls) -> Dict[str, Any]:
        """Load configuration from environment variables.

        Environment variables with the prefix FIBER_NLC_ are used. The remainder is
        matched against the known key tree, so FIBER_NLC_LINK_N_SPANS maps to
        ``link.n_spans``; unknown names fall back to splitting on every underscore.

        Returns:
            Configuration dictionary
        """
        result: Dict[str, Any] = {}

        for key, value in os.environ.items():
            if not key.startswith(ENV_PREFIX):
                continue
            parts = key[len(ENV_PREFIX):].lower().split("_")
            path = cls._resolve_key_parts(parts, cls.DEFAULTS) or parts
            current = result
            for part in path[:-1]:
                current = current.setdefault(part, {})
            current[path[-1]] = Config._parse_env_value(value)

        return result

    @classmethod
    def _resolve_key_parts(cls, parts: List[str], tree: Dict[str, Any]) -> Optional[List[str]]:
        for i in range(1, len(parts) + 1):
            candidate = "_".join(parts[:i])
            if candidate not in tree:
                continue
            rest = parts[i:]
            node = tree[candidate]
            if not rest and not isinstance(node, dict):
                return [candidate]
            if rest and isinstance(node, dict):
                tail = cls._resolve_key_parts(rest, node)
                if tail:
                    return [candidate] + tail
        return None

    @staticmethod
    def _parse_env_value(value: str) -> Any:
        """Parse an environment variable value to the appropriate type.

        Args:
            value: The environment variable value

        Returns:
            The parsed value
        """
        if value.lower() in ("true", "yes"):
            return True
        if value.lower() in ("false", "no"):
            return False

        try:
            return int(value)
        except ValueError:
            pass

        try:
            return float(value)
        except ValueError:
            pass

        # Comma-separated lists, e.g. launch power grids
        if "," in value:
            return [Config._parse_env_value(v.strip()) for v in value.split(",")]

        return value

    @staticmethod
    def _load_from_args(argv: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        """Load configuration from command-line arguments.

        Args:
            argv: Arguments to scan; unknown arguments are ignored

        Returns:
            Configuration dictionary
        """
        parser = argparse.ArgumentParser(add_help=False)
        parser.add_argument("--log-level")
        parser.add_argument("--workers", type=int)
        parser.add_argument("--set", action="append", default=[])

        args, _ = parser.parse_known_args(list(sys.argv[1:] if argv is None else argv))
        result: Dict[str, Any] = {}

        if args.log_level:
            result["log_level"] = args.log_level

        if args.workers:
            result.setdefault("runtime", {})["workers"] = args.workers

        dotted = dict(Config.parse_assignment(item) for item in args.set)
        Config._deep_update(result, Config.expand_dotted(dotted))

        return result

    @staticmethod
    def parse_assignment(item: str) -> Tuple[str, Any]:
        """Parse a ``key.path=value`` assignment.

        Raises:
            ConfigurationError: If the item has no ``=``
        """
        if "=" not in item:
            raise ConfigurationError(f"Expected key=value, got: {item}")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        return key.strip(), value

    @staticmethod
    def expand_dotted(values: Dict[str, Any]) -> Dict[str, Any]:
        """Expand ``{"a.b": 1}`` into ``{"a": {"b": 1}}``."""
        result: Dict[str, Any] = {}
        for key, value in values.items():
            parts = key.split(".")
            current = result
            for part in parts[:-1]:
                current = current.setdefault(part, {})
            current[parts[-1]] = value
        return result

    @staticmethod
    def _deep_update(target: Dict[str, Any], source: Dict[str, Any]) -> None:
        """Recursively update a nested dictionary.

        Args:
            target: The dictionary to update
            source: The dictionary with updates
        """
        for key, value in source.items():
            if isinstance(value, dict) and key in target and isinstance(target[key], dict):
                Config._deep_update(target[key], value)
            else:
                target[key] = value

    def get(self, key_path: str, default: Any = None) -> Any:
        """Get a configuration value by its key path.

        Args:
            key_path: Dot-separated path to the configuration value
            default: Default value to return if the key is not found

        Returns:
            The configuration value, or the default value if not found
        """
        current: Any = self._config
        for key in key_path.split("."):
            if not isinstance(current, dict) or key not in current:
                return default
            current = current[key]
        return current

    def as_dict(self) -> Dict[str, Any]:
        """Get the full configuration as a dictionary.

        Returns:
            A deep copy of the configuration dictionary
        """
        return copy.deepcopy(self._config)

    def resolve_env_vars(self, value: str) -> str:
        """Resolve ``${VAR}`` references in a configuration value.

        Args:
            value: The configuration value with potential environment variables

        Returns:
            The resolved value
        """
        if not isinstance(value, str):
            return value

        result = value
        for match in re.findall(r"\${([^}]+)}", value):
            env_value = os.environ.get(match)
            if env_value is not None:
                result = result.replace(f"${{{match}}}", env_value)
        return result

    def validate(self) -> List[str]:
        """Validate value ranges of the configuration.

        Returns:
            A list of validation errors, empty if valid
        """
        errors = []

        valid_log_levels = {"debug", "info", "warning", "error"}
        log_level = self.get("log_level")
        if log_level not in valid_log_levels:
            errors.append(f"Invalid log level: {log_level}. Must be one of {sorted(valid_log_levels)}")

        for key in ("alpha_db_per_km", "beta2_ps2_per_km", "gamma_per_w_per_km",
                    "noise_figure_db", "center_wavelength_nm"):
            value = self.get(f"link.{key}")
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                errors.append(f"link.{key} must be a finite number, got {value!r}")

        span_length = self.get("link.span_length_km")
        if not isinstance(span_length, (int, float)) or span_length <= 0:
            errors.append(f"link.span_length_km must be positive, got {span_length!r}")

        n_spans = self.get("link.n_spans")
        if not isinstance(n_spans, int) or n_spans < 1:
            errors.append(f"link.n_spans must be an integer >= 1, got {n_spans!r}")

        rolloff = self.get("signal.rrc_rolloff")
        if not isinstance(rolloff, (int, float)) or not 0 <= rolloff <= 1:
            errors.append(f"signal.rrc_rolloff must lie in [0, 1], got {rolloff!r}")

        if not self.get("signal.tau_over_t", 0) > 0:
            errors.append("signal.tau_over_t must be positive")

        window = self.get("coefficients.window")
        if not isinstance(window, int) or window <= 0 or window % 2:
            errors.append(f"coefficients.window must be a positive even integer, got {window!r}")

        for key in ("panels_z", "panels_s"):
            panels = self.get(f"coefficients.quadrature.{key}")
            if not isinstance(panels, int) or panels < 2:
                errors.append(f"coefficients.quadrature.{key} must be >= 2, got {panels!r}")

        if not self.get("coefficients.quadrature.rel_tol", 0) > 0:
            errors.append("coefficients.quadrature.rel_tol must be positive")

        if self.get("simulation.samples_per_symbol", 0) < 2:
            errors.append("simulation.samples_per_symbol must be >= 2")

        if self.get("dbp.steps_per_span", 0) < 1:
            errors.append("dbp.steps_per_span must be >= 1")

        workers = self.get("runtime.workers")
        if not isinstance(workers, int) or workers < 1:
            errors.append(f"runtime.workers must be an integer >= 1, got {workers!r}")

        return errors
