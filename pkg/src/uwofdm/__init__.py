"""Link-level baseband simulator for UW-OFDM and CP-OFDM under carrier
frequency offset: transmit chain, impairment models, compensation tiers,
residual-error models, and a reproducible MSE/BER experiment harness."""

__version__ = "0.1.0"
