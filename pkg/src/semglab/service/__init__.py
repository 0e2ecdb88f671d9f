from .app import create_app, serve
from .manager import ServiceConfig, SessionManager

__all__ = ["create_app", "serve", "ServiceConfig", "SessionManager"]
