"""mdlfuzz: corpus-to-fuzzer toolchain for MDL block-diagram model files."""

__version__ = "0.1.0"
