"""Knowledge-graph RAG pipeline and evaluation harness for Japanese medical QA."""

__version__ = "0.1.0"
