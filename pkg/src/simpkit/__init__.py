"""simpkit: hybrid controllable sentence simplification toolkit.

Rule-based and neural candidate generation, learned pairwise ranking,
copy-controlled paraphrasing, data augmentation, and automatic evaluation
metrics, built on numpy with no deep-learning framework dependency.
"""

__version__ = "0.1.0"
