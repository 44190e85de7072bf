"""Metadata protocol core of an edge-device distributed file system.

Members name each other hierarchically, ping to judge reachability, pull
member lists and owned subtrees when sequence numbers move, and route file
mutations through the owning member. Everything runs over a deterministic
simulated network.
"""

from .metadata import FileEntry, FolderNode, HierarchyTree, MemberList, MemberRecord, Status
from .node import LocalOp, Node, snapshot
from .reachability import ReachabilityConfig
from .simnet import NetConfig, PartitionState, SimNet

__version__ = "0.1.0"

__all__ = [
    "FileEntry",
    "FolderNode",
    "HierarchyTree",
    "LocalOp",
    "MemberList",
    "MemberRecord",
    "NetConfig",
    "Node",
    "PartitionState",
    "ReachabilityConfig",
    "SimNet",
    "Status",
    "snapshot",
]
