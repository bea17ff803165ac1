import logging

from siterank.cli import run
from siterank.config import LOG_LEVEL

logging.basicConfig(
    format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
    level=LOG_LEVEL,
)


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
