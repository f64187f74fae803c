from uavafl.service.app import app

__all__ = ["app"]
