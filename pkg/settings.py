# settings.py

# --- Master Logging Switch ---
# Set to True to enable logging, False to disable it completely.
# If False, no log file will be created and only warnings reach the console.
LOGGING_ENABLED = True

# --- Centralized Debug Flag ---
# Set to True to log per-slot detail (projections, arrivals, repairs).
# Set to False for long training runs.
ENABLE_DEBUG_LOGGING = False

# --- Log File ---
LOG_FILE_NAME = "hmappo.log"
LOG_MAX_BYTES = 5 * 1024 * 1024
LOG_BACKUP_COUNT = 5
