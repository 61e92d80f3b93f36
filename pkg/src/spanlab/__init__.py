"""Self-hostable span annotation service for model-generated texts.

Humans and LLMs annotate word spans of generated outputs with error
categories over a shared data model; campaigns organize the work into
batches and everything persists as plain files.
"""

from .errors import SpanlabError
from .model import (
    AnnotationRecord,
    Category,
    ExampleRef,
    SpanAnnotation,
    Violation,
    validate_record,
)

__all__ = [
    "AnnotationRecord",
    "Category",
    "ExampleRef",
    "SpanAnnotation",
    "SpanlabError",
    "Violation",
    "validate_record",
]

__version__ = "0.1.0"
