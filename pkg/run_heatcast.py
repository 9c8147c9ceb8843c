# run_heatcast.py
import sys
import os
import logging

# Ensure the project root is in sys.path so 'app' can be imported
project_root = os.path.dirname(os.path.abspath(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

try:
    from app.main import run_application
except ModuleNotFoundError as e:
    logging.basicConfig(level=logging.ERROR)
    logging.critical(f"Failed to import application components: {e}. Check PYTHONPATH and installed requirements.",
                     exc_info=True)
    sys.exit(2)

if __name__ == "__main__":
    try:
        sys.exit(run_application(sys.argv[1:]))
    except KeyboardInterrupt:
        logging.getLogger(__name__).warning("Interrupted")
        sys.exit(130)
    except Exception as e:
        logging.critical(f"Unhandled exception in application: {e}", exc_info=True)
        sys.exit(2)
