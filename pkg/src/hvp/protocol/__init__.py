"""Two-party offloading protocol: packets, client/evaluator flows and the CLI."""

from .flow import ProtocolError, Report, decrypt_result, evaluate, make_request_packet, resume_flow, suggest_budget
from .packets import PacketError, RequestPacket, ResultPacket, decode_request, decode_result, encode_request, encode_result, parse_result_packet

__all__ = [name for name in dir() if not name.startswith("_")]
