"""Energy-efficient job assignment in heterogeneous server farms: simulator, policies and fluid benchmark."""

__version__ = "1.0.0"
