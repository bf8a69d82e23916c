"""Built-in scenario files (JSON), loadable via ``builtin:<name>`` references."""
