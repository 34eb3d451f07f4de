"""
DepthDerain - CLI
Single command-line entry point for the whole workflow.
"""

from .main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_parser, main

__all__ = ['main', 'build_parser', 'EXIT_OK', 'EXIT_USAGE', 'EXIT_RUNTIME']
