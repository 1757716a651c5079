"""Grounded multimodal chat framework.

Subpackages:
  types      - shared domain types and JSON codecs
  prompting  - chat / entity-matching prompt construction, loss boundary
  maskops    - bitmap kernels (compiled core + pure-Python fallback)
  grounding  - tag -> detect -> segment -> match pipeline over adapters
  model      - encoder / query-head / projection / LLM stacks (toy-scale)
  training   - two-stage training with parameter freeze plans
  data       - corpus validators and instruction dataset builders
  service    - HTTP chat service
  cli        - operator entry points
"""

__version__ = "0.1.0"
