"""Database models for the preprocessing cache."""
from datetime import datetime, timezone

from sqlalchemy import Column, DateTime, Index, Integer, String, Text
from sqlalchemy.orm import declarative_base

Base = declarative_base()


class Cache(Base):
    """Annotated, windowed examples keyed by preprocessing inputs."""
    __tablename__ = 'cache'

    id = Column(Integer, primary_key=True)
    cache_key = Column(String(64), unique=True, nullable=False)  # sha256 hex
    split = Column(String(20))  # train, dev, test
    value = Column(Text)  # JSON serialized
    example_count = Column(Integer)
    created_at = Column(DateTime, default=lambda: datetime.now(timezone.utc))

    __table_args__ = (
        Index('idx_cache_key_split', 'cache_key', 'split'),
    )
