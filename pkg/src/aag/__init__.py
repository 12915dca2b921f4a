"""Zero-shot LLM assignment grading with feedback reports and survey statistics."""

__version__ = "0.1.0"
