#!/usr/bin/env python3

import os
import sys

import penaltylearn.const
import penaltylearn.core
import penaltylearn.log


def main() -> None:
    if bool(os.getenv("DEBUG", False)) or "--debug" in sys.argv:
        penaltylearn.const.DEBUG = True

    if penaltylearn.const.DEBUG:
        penaltylearn.log.setup_stderr(debug=True)
        penaltylearn.log.dbg("Starting in Debug Mode")

    sys.exit(penaltylearn.core.PenaltyLearnCli(sys.argv[1:]))


if __name__ == "__main__":
    main()
