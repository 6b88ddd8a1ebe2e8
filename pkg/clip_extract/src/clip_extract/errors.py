class ExtractError(Exception):
    """Anything that stops the extraction tool from producing valid output."""
