from fractions import Fraction
from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict

from app.rationals import parse_rat


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="BAIRE_",
    )

    log_level: str = "INFO"

    corpus_seed: int = 1
    corpus_count: int = 200
    corpus_max_rank: int = 3
    corpus_cycle_slots: int = 2
    corpus_prefix_len: int = 2
    corpus_values: str = "0,1,-1,1/2,-1/2,1/3"

    oracle_copies: str = "2,3"
    decompose_tolerance: str = "1/100"
    staircase_levels: str = "1,2,4,8"
    witness_max_rank: int = 6
    witness_eps_grid: str = "1/10,1/2,1"

    max_loop_iterations: int = 64
    suite_workers: int = 8

    def rationals(self, raw: str) -> list[Fraction]:
        return [parse_rat(item.strip()) for item in raw.split(",") if item.strip()]

    def integers(self, raw: str) -> list[int]:
        return [int(item) for item in raw.split(",") if item.strip()]


@lru_cache()
def get_settings() -> Settings:
    return Settings()
