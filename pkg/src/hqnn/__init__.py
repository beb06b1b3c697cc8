"""Hybrid quantum-classical stock forecasting at desk scale.

Subpackage map:

* indicators    RSI, MACD, ADX over OHLC bars
* preprocess    feature assembly, k-best selection, scaling, windowing
* quantum       exact statevector circuits and parameter-shift gradients
* classical     dense and recurrent layers with exact backpropagation
* models        the seven regressor architectures behind one interface
* train         ADAM fitting, early stopping, fold planning, cross-validation
* evaluation    RMSE, residual statistics, comparison tables
* data          CSV ingestion and synthetic series generation
* experiment    experiment configs and grid orchestration
* cli           command-line entry point (synth, prepare, train, evaluate, run)
"""

__version__ = "0.1.0"

from .exceptions import HqnnError

__all__ = ["HqnnError", "__version__"]
