import os

# Newer MLflow releases reject file-based tracking URIs unless explicitly allowed;
# the tracking tests log to a temporary file store.
os.environ.setdefault("MLFLOW_ALLOW_FILE_STORE", "true")
