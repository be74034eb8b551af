"""moodpulse: collective affect reactions to events in timestamped text corpora."""

__version__ = "0.1.0"
