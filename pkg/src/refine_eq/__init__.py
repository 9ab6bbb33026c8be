"""Arithmetically refined binary session types.

Signature parsing and validity checking, a sound-but-incomplete coinductive
type-equality algorithm over a Presburger backend, a bounded-bisimulation
testing oracle, and an executable two-counter-machine reduction corpus, all
behind a small HTTP service with a thin command-line client.
"""

__version__ = "0.1.0"
