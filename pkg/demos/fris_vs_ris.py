"""FRIS against a fixed half-wavelength RIS panel, small version of the SNR sweep.

Calibrates the gain multiplier on a handful of seeds, then sweeps the
average SNR for two ON budgets. Takes a few seconds; raise SEEDS for
smoother numbers.
"""
from fris_ambc import bench
from fris_ambc.config import ScenarioConfig
from fris_ambc.pso import PsoConfig

SEEDS = [1, 2, 3, 4, 5]

scn = ScenarioConfig()
cfg = PsoConfig()
k = bench.calibrate(scn, cfg, SEEDS)
print("gain multiplier: %.1f" % k)

scn = scn.replace(gain_scale=k, calibrate=False)
rec = bench.run_rate_vs_snr(scn, cfg, SEEDS, snr_list=[0, 10, 20, 30], m_o_list=[25, 100])
print(rec.csv)

mean = {(p["snr_db"], p["system"], p["m_o"]): p["mean"] for p in rec.points}
for m_o in (25, 100):
    gaps = [mean[(g, "FRIS", m_o)] - mean[(g, "RIS", m_o)] for g in (0, 10, 20, 30)]
    print(f"M_o={m_o}: FRIS - RIS gap per SNR point:", " ".join(f"{g:+.2f}" for g in gaps))
