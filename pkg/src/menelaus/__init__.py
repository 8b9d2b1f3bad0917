"""Menelaus sequent system toolkit.

Submodules:

- ``complex_core``: Delta-complexes, 2-cycles, M-complex validation, links,
  the cycle-unfolding construction, <2-isomorphism.
- ``sextuple_logic``: atomic sextuple formulas, the octahedral group action,
  sequents, the triangle-to-formula operator and axiomatic sequents.
- ``proof_engine``: derivations, rule checking, normalization, the decision
  procedure with refutation certificates.
- ``geometry_check``: exact rational Euclidean/projective interpretations and
  the soundness harness.
- ``operad``: connected sums, cut-triangles, splitting and decomposition
  trees.
- ``corpus``: named built-in fixtures.
- ``cli``: command-line front end.
"""

__version__ = "0.1.0"
