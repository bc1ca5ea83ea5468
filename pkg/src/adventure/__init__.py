"""Adaptive + GenAI programming practice platform.

Three instructional modes over one exercise graph: Elo-driven adaptive
selection, retrieval-grounded GenAI feedback with model-picked next exercises,
and a hybrid that offers both. Includes the telemetry pipeline and statistics
used to compare the modes offline.
"""

__version__ = "0.1.0"
