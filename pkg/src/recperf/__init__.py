"""recperf: functional and performance simulation of sparse-embedding
recommendation inference on CPU-only, CPU-GPU and CPU+FPGA design points."""

__version__ = "0.1.0"
