"""Evidence output: pcap synthesis, dataset packaging, verification."""

from .packaging import (
    build_catalog,
    load_manifest,
    package_dataset,
    resolve_catalog,
    verify_dataset,
)
from .pcapio import PcapRecord, mac_for_ip, read_pcap, synthesize_packet, write_pcap

__all__ = [
    "PcapRecord",
    "build_catalog",
    "load_manifest",
    "mac_for_ip",
    "package_dataset",
    "read_pcap",
    "resolve_catalog",
    "synthesize_packet",
    "verify_dataset",
    "write_pcap",
]
