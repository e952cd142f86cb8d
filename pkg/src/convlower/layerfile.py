"""Line-oriented layer files: ``name n k d o b`` per line, ``#`` comments."""
from importlib import resources

from ._validation import ConfigurationError
from .tensor import LayerConfig

DEFAULT_LAYER_FILE = "default_layers.txt"


def parse_layers(lines, source="<layers>"):
    """Return an ordered ``{name: LayerConfig}`` dict; errors carry ``source:line``."""
    layers = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ConfigurationError(f"{source}:{lineno}: expected 'name n k d o b', got {raw.strip()!r}")
        name = fields[0]
        if name in layers:
            raise ConfigurationError(f"{source}:{lineno}: duplicate layer name {name!r}")
        try:
            n, k, d, o, b = (int(v) for v in fields[1:])
            layers[name] = LayerConfig(n=n, k=k, d=d, o=o, b=b)
        except ValueError as exc:
            raise ConfigurationError(f"{source}:{lineno}: {exc}") from None
    if not layers:
        raise ConfigurationError(f"{source}: no layers defined")
    return layers


def load_layers(path=None):
    if path is None:
        text = resources.files("convlower.data").joinpath(DEFAULT_LAYER_FILE).read_text()
        return parse_layers(text.splitlines(), source=DEFAULT_LAYER_FILE)
    try:
        with open(path) as fh:
            return parse_layers(fh, source=str(path))
    except OSError as exc:
        raise ConfigurationError(f"cannot read layer file {path}: {exc}") from None


def format_layers(layers):
    return "".join(f"{name} {l.n} {l.k} {l.d} {l.o} {l.b}\n" for name, l in layers.items())
