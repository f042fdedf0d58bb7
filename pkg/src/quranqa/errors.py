"""Exception hierarchy; the CLI maps each branch to an exit code."""


class QuranQAError(Exception):
    pass


class DataError(QuranQAError, ValueError):
    """Malformed or inconsistent input data (corpus, n-best, run files)."""


class ProviderError(QuranQAError):
    """Remote model call failed after retries."""


class OfflineCacheMiss(ProviderError):
    def __init__(self, prompt_hash: str):
        super().__init__(f"offline mode: no cached response for prompt {prompt_hash}")
        self.prompt_hash = prompt_hash


class CredentialMissing(ProviderError):
    pass
