"""Classroom bot service: attendance, surveys and feedback run over a chat
platform and driven by an authenticated REST API."""

__version__ = "0.1.0"
