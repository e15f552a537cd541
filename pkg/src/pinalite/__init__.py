"""Privacy-preserving sharing for GUI automation scripts.

A recorded script drags screen content along with it: account names,
balances, addresses. Before sharing, every string the script carries is
checked against a salted-hash aggregation service; strings too few other
users have seen are replaced by hashes the consumer's device resolves
locally against its own screens.
"""

__version__ = "0.1.0"
