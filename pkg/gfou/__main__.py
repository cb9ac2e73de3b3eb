"""Entry point for `python -m gfou`."""

from gfou.cli.main import main

if __name__ == "__main__":
    main()
