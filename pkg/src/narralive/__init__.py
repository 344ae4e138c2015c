"""Toolchain for branching mobile-storytelling experiences.

Authoring happens in the `.story` DSL (script module) over the immutable
story tree (model). Stories are validated and measured (analyzer), played
deterministically (runtime), packed into integrity-checked bundles
(bundle), and distributed through a small versioned catalog service
(catalog). The cli module ties it together for operators.
"""

__version__ = "0.1.0"
