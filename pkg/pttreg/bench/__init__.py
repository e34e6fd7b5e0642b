"""Attention work scaling sweeps."""

from pttreg.bench.sweep import work_bound, fit_slope, leaf_voxel_size, report_to_csv, run_sweep

__all__ = ["work_bound", "fit_slope", "leaf_voxel_size", "report_to_csv", "run_sweep"]
