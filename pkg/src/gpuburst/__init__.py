"""gpuburst: deterministic simulation of preemptible multi-cloud GPU bursts
feeding a high-throughput job pool, plus a small photon-propagation Monte
Carlo kernel usable standalone or as a workload generator."""

__version__ = "0.1.0"
