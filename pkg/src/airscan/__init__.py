"""airscan: evidence-generating security scanner for LLM model directories.

Scans a model release on disk (manifests, serializer containers, tensor
structure), computes probe metrics from external run logs, and assembles
everything into a verifiable machine-readable evidence artifact that can
be exported along SPDX and CycloneDX crosswalks.
"""

__version__ = "0.1.0"

TOOL_NAME = "airscan"
