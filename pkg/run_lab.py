# run_lab.py
import sys

# Важно: этот хак нужен, чтобы Python мог найти наши модули в папке `app`
# при запуске из корневой директории.
import os
sys.path.append(os.getcwd())

from app.cli import main


if __name__ == "__main__":
    main()
