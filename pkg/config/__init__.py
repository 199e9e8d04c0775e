from .errors import BadValue, UnknownKey, UnknownPreset
from .settings import RunConfig, dump_config, load_config

__all__ = ["BadValue", "RunConfig", "UnknownKey", "UnknownPreset", "dump_config", "load_config"]
