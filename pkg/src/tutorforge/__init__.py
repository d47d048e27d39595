"""TutorForge: a self-hostable pedagogical coding assistant.

Answers programming questions, explains and annotates code, and
scaffolds code-writing through pseudo-code, while guardrails keep it
from handing out direct code solutions.
"""

__version__ = "0.1.0"
