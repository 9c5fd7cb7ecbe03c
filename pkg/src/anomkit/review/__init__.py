from .queue import (
    PendingItemsError,
    Progress,
    QueueItem,
    ReviewQueue,
    UnknownItemError,
    finalize,
    latest_by_item,
)
from .service import ReviewSession, create_app

__all__ = [
    "PendingItemsError",
    "Progress",
    "QueueItem",
    "ReviewQueue",
    "UnknownItemError",
    "finalize",
    "latest_by_item",
    "ReviewSession",
    "create_app",
]
