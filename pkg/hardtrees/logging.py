import logging
import sys

# Create the hardtrees logger instance
log = logging.getLogger("hardtrees")
log.setLevel(logging.INFO)
handler = logging.StreamHandler(sys.stdout)
handler.setFormatter(logging.Formatter("%(asctime)s (%(levelname)s): %(message)s", datefmt="%Y-%m-%d %H:%M:%S"))
log.addHandler(handler)


def set_verbosity(verbose: bool, quiet: bool) -> None:
    """
    Adjusts the package log level from the command line flags. Quiet wins if both are given.

    :param verbose: Log at DEBUG level
    :param quiet: Only log warnings and errors
    """
    if quiet:
        log.setLevel(logging.WARNING)
    elif verbose:
        log.setLevel(logging.DEBUG)
    else:
        log.setLevel(logging.INFO)
