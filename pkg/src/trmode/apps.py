"""Application classes and application-direction links shared across modules."""

from __future__ import annotations

from enum import Enum
from typing import Iterable, NamedTuple


class Application(str, Enum):
    A1 = "A1"  # text
    A2 = "A2"  # conversational voice
    A3 = "A3"  # conversational video


class Direction(str, Enum):
    UL = "UL"
    DL = "DL"


class Link(NamedTuple):
    app: Application
    direction: Direction


ALL_APPS = frozenset(Application)


def links_for(apps: Iterable[Application], directions: Iterable[Direction] = (Direction.UL, Direction.DL)) -> frozenset:
    """Every (application, direction) pair for the given applications."""
    dirs = tuple(directions)
    return frozenset(Link(Application(a), d) for a in apps for d in dirs)


def count_links(links: Iterable[Link]) -> dict:
    """Number of uplink and downlink links in a link set."""
    n = {Direction.UL: 0, Direction.DL: 0}
    for link in links:
        n[link.direction] += 1
    return n
