"""Technique registry for fiber-nlc."""

import importlib
from typing import Dict, Type

from fiber_nlc.core.errors import ConfigurationError


class TechniqueRegistry:
    """Registry for compensation techniques.

    This class manages registration and retrieval of technique classes by their
    type name ("edc", "fo", "so", "dbp").
    """

    _registry: Dict[str, Type] = {}

    @classmethod
    def register(cls, technique_type: str, technique_class: Type) -> None:
        """Register a technique class for a type name.

        Args:
            technique_type: The type identifier (e.g., "edc", "so")
            technique_class: The class implementing this type
        """
        cls._registry[technique_type] = technique_class

    @classmethod
    def get(cls, technique_type: str) -> Type:
        """Get the technique class for a type name.

        Args:
            technique_type: The type identifier

        Returns:
            The technique class for the given type

        Raises:
            ConfigurationError: If the type is not registered
        """
        if technique_type not in cls._registry:
            if cls._import_technique_type(technique_type):
                return cls._registry[technique_type]

            raise ConfigurationError(
                f"Technique type not registered: {technique_type}. "
                f"Available technique types: {', '.join(sorted(cls._registry))}"
            )

        return cls._registry[technique_type]

    @classmethod
    def get_all(cls) -> Dict[str, Type]:
        """Get all registered technique types."""
        return cls._registry.copy()

    @classmethod
    def _import_technique_type(cls, technique_type: str) -> bool:
        """Try to import the module that defines a technique type.

        For "dbp" this imports ``fiber_nlc.techniques.dbp``; "fo" and "so" both
        live in ``fiber_nlc.techniques.pbnlc``.

        Args:
            technique_type: The type identifier

        Returns:
            True if the type is registered after the import
        """
        module_name = "pbnlc" if technique_type in ("fo", "so") else technique_type

        try:
            importlib.import_module(f"fiber_nlc.techniques.{module_name}")
            return technique_type in cls._registry
        except ImportError:
            return False

    @classmethod
    def clear(cls) -> None:
        """Clear all registered technique types.

        This is primarily used for testing.
        """
        cls._registry.clear()


def register_technique(technique_type: str):
    """Decorator to register a technique class under a type name.

    Args:
        technique_type: The type identifier

    Returns:
        Decorator function
    """

    def decorator(technique_class: Type) -> Type:
        TechniqueRegistry.register(technique_type, technique_class)
        return technique_class

    return decorator
