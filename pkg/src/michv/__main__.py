from michv.cli import entry

entry()
