"""Rollup arrangers: a sequencer with a data availability committee, and a
fully decentralized arranger built on set Byzantine consensus."""

__version__ = "0.1.0"
