import importlib
import inspect
from abc import ABC
from functools import lru_cache
from typing import Type, TypeVar, Generic

from farmsim.exceptions import ConfigurationError

T = TypeVar("T")


class ImportFactory(ABC, Generic[T]):
    """
    Resolves "module:Class" names relative to the package of the concrete factory.
    Fully qualified modules ("package.module:Class") are accepted as well, so plugins can live outside farmsim.
    """

    base_class: Type[T]

    @classmethod
    @lru_cache()
    def get_class(cls, requested_class: str) -> Type[T]:
        if ":" not in requested_class:
            raise ConfigurationError(f'Invalid class reference "{requested_class}", expected "module:Class"')
        module_name, class_name = requested_class.split(":", 1)
        package = cls.__module__[: cls.__module__.rindex(".")]

        try:
            if "." in module_name:
                module = importlib.import_module(module_name)
            else:
                module = importlib.import_module(package + "." + module_name, package=package)
        except ImportError as e:
            raise ConfigurationError(f"Cannot import {module_name} for {requested_class}: {e}") from e
        clstype = getattr(module, class_name, None)
        if not inspect.isclass(clstype) or not issubclass(clstype, cls.base_class):
            raise ConfigurationError(f"Class {class_name} in {module.__name__} is missing or not a {cls.base_class.__name__}")
        return clstype
