from typing import Any, List, Union

from diqkdsps.exceptions import ConfigError

MISSING = object()

PathLike = Union[str, List[Any]]


def normalize_path(path: PathLike) -> List[str]:
    """Normalize a config path to a list of section and key names.

    Args:
        path: Either a dot-notation string (e.g., "source.eta1") or a list of
            keys.

    Returns:
        List of keys, all strings.

    Raises:
        ConfigError: If the path is empty, contains empty keys or is neither a
            string nor a list.
    """
    if isinstance(path, list):
        keys = [str(key) for key in path]
    elif isinstance(path, str):
        keys = path.split(".")
    else:
        raise ConfigError(f"Path must be string or list, got {type(path).__name__}")
    if not keys or any(key == "" for key in keys):
        raise ConfigError("Path cannot be empty or contain empty keys", str(path) or None)
    return keys


def get_at(config: Any, path: PathLike, *, default: Any = MISSING) -> Any:
    """Retrieve a value from a nested config tree.

    Raises ConfigError naming the path when the value is missing and no
    ``default`` is given. Array-of-tables entries are addressed by index
    (``"finite_key.series.0.label"``).

    Examples:
        ```python
        config = {"source": {"eta1": 0.9}}
        get_at(config, "source.eta1")  # Returns: 0.9
        get_at(config, "source.g2", default=0.0)  # Returns: 0.0
        ```
    """
    keys = normalize_path(path)
    current = config
    for depth, key in enumerate(keys):
        where = ".".join(keys[:depth + 1])
        if isinstance(current, dict):
            if key in current:
                current = current[key]
                continue
        elif isinstance(current, (list, tuple)):
            try:
                current = current[int(key)]
                continue
            except (ValueError, IndexError):
                pass
        if default is not MISSING:
            return default
        raise ConfigError("Missing required key", where)
    return current


def set_at(config: dict, path: PathLike, value: Any, *, create: bool = False) -> None:
    """Set a value in a nested config tree, in place.

    With ``create=True`` missing intermediate sections are created as tables.
    """
    keys = normalize_path(path)
    current = config
    for depth, key in enumerate(keys[:-1]):
        if not isinstance(current, dict):
            raise ConfigError("Cannot descend into a non-table value", ".".join(keys[:depth]))
        if key not in current:
            if not create:
                raise ConfigError("Missing section", ".".join(keys[:depth + 1]))
            current[key] = {}
        current = current[key]
    if not isinstance(current, dict):
        raise ConfigError("Cannot set a key on a non-table value", ".".join(keys[:-1]))
    current[keys[-1]] = value
