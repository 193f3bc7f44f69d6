#!/usr/bin/env python

import os
import sys

import configure


def main_body():
    if len(sys.argv) > 1 and sys.argv[1] not in ('--help', '-h', 'clean'):
        configure.metadata(os.path.join('pysizing', 'metadata.json'))
    configure.setup()


def main():
    success = False
    try:
        main_body()
        success = True
    finally:
        configure.final_message(success)

if __name__ == "__main__":
    main()
