"""Flat key=value configuration files

    # comment
    sizes = 64,128
    --solver = closed
    pbc-mode=wholepatch

Keys are normalized: leading dashes dropped, dashes turned into underscores,
so a file key names the same setting as the command-line flag.
"""


class ConfigFileError(ValueError):
    """Malformed configuration file"""


def normalize_key(key):
    return key.strip().lstrip("-").replace("-", "_").lower()


def parse_config_text(text, source="<config>"):
    """Parse config text into an ordered {key: raw string value} dict

    Raises:
        ConfigFileError: On a line without '=' or with an empty key
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigFileError(f"{source}:{lineno}: expected key=value, got '{line}'")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        if not key:
            raise ConfigFileError(f"{source}:{lineno}: empty key")
        values[key] = value.strip()
    return values


def load_config_file(path):
    """Read and parse a config file (OSError propagates)"""
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), source=str(path))
