"""Pandemic Racism Analytics - hashtag collection, racism classification and topic analysis of tweets."""

__version__ = "1.0.0"
