"""Self-sovereign identity toolkit for clinical credential passporting.

Protocol layer (keys, DIDs, connections, blind-link-secret credentials,
selective-disclosure presentations, audit chain) plus a career scenario
engine that replays a doctor's identity moments and reports the
administrative time saved.
"""

__version__ = "0.1.0"
