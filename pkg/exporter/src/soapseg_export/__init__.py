"""soapseg-export: turn pretrained-LM representations into the soapseg
embedding-file format, one vector per note paragraph.

The package is independent of the core library; it speaks to it only
through the JSONL corpus format and the binary embedding-file format.
"""

__version__ = "0.1.0"

from .export import ExportJob, export_contextual, export_sentencevec

__all__ = ["ExportJob", "export_contextual", "export_sentencevec", "__version__"]
