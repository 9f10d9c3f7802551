"""Event studies on daily price panels.

A library and CLI that measures how an event moved sector prices:
CAPM-adjusted abnormal returns, cumulative windows, rank and
conditional-probability tests, a dummy-interaction risk model, structural
diagnostics, and a seeded Monte-Carlo harness for size/power checks.
"""

__version__ = "0.1.0"
