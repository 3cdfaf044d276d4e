"""foodcourt: a small-town restaurant competition simulator.

Two manager agents run rival restaurants and compete for a fixed roster of
customers over a multi-day loop. Agents can be backed by a live chat-completion
service, a record/replay cache, or deterministic scripted policies. Every run
produces an append-only event log from which all competition metrics are
computed offline.
"""

__version__ = "0.1.0"
