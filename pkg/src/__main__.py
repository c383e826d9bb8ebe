from src.cli import main

raise SystemExit(main())
