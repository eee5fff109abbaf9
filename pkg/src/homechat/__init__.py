"""Context-aware smart-home assistant pipeline.

Sensor streams and indoor position fixes are turned into per-user activity
episodes, which drive a chatbot through a fixed prompt grammar and a
``(text, score)`` response contract.
"""

__version__ = "0.1.0"
