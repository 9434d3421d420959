from .byzantine import ByzantineSbcReplica
from .messages import Commit, Decide, Echo, Input, Message, Propose, ViewChange, decode, set_digest
from .oracle import SABOTAGE_MODES, OracleEndpoint, OracleSbc
from .predicates import SBC_PREDICATES
from .protocol import SbcParams, SbcReplica, TransportKeys

__all__ = [
    "ByzantineSbcReplica",
    "Commit",
    "Decide",
    "Echo",
    "Input",
    "Message",
    "OracleEndpoint",
    "OracleSbc",
    "Propose",
    "SABOTAGE_MODES",
    "SBC_PREDICATES",
    "SbcParams",
    "SbcReplica",
    "TransportKeys",
    "ViewChange",
    "decode",
    "set_digest",
]
