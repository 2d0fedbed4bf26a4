"""RIS-aided mmWave MIMO-OFDM positioning: channel synthesis, estimation, bounds and fusion."""
__version__ = "0.1.0"
