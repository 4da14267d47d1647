"""sqlsynth: synthesize diverse (text, SQL) pairs for a new database schema
by retrieving structurally similar examples from an existing corpus, masking
their schema-specific words, refilling against the target SQL, and filtering
inconsistent pairs."""

__version__ = "0.1.0"
