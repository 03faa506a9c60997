"""Toolkit for machine-checked programming exercises.

Subpackages cover the executable mini-language (`exr.minilang`), the
exercise spec format (`exr.specdsl`), term rewriting for worked-solution
graphs and wrong-answer diagnosis (`exr.rewrite`), template-based
generation (`exr.templates`), cognitive classification (`exr.bloom`),
solution-plan typing and linting (`exr.plans`), and student simulation
(`exr.sim`).  The `exr` console script in `exr.cli` fronts all of it.
"""

__version__ = "0.1.0"
