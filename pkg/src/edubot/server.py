"""Process entry point: configuration from the environment, then uvicorn.

Environment variables:

=========================  ==============================================
EDUBOT_BIND                host:port to listen on (default 127.0.0.1:8080)
EDUBOT_DATA_DIR            directory for data/, logs/ and registry.json
EDUBOT_SECRETS             path of the encrypted secrets file
EDUBOT_SECRETS_PASSPHRASE  passphrase for the secrets file (required)
EDUBOT_CONSOLE_ORIGIN      origin allowed to call the API from a browser
=========================  ==============================================
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .api import Service, ServiceConfig, create_app
from .core import InvalidInput


def config_from_env(environ=os.environ) -> ServiceConfig:
    passphrase = environ.get("EDUBOT_SECRETS_PASSPHRASE", "")
    if not passphrase:
        raise InvalidInput("EDUBOT_SECRETS_PASSPHRASE must be set")
    data_dir = Path(environ.get("EDUBOT_DATA_DIR", "./edubot-data"))
    secrets_path = environ.get("EDUBOT_SECRETS")
    return ServiceConfig(
        data_dir=data_dir,
        secrets_path=Path(secrets_path) if secrets_path else data_dir / ".secrets.json",
        passphrase=passphrase,
        console_origin=environ.get("EDUBOT_CONSOLE_ORIGIN", "http://localhost:5173"),
    )


def parse_bind(value: str) -> tuple:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise InvalidInput(f"bind address {value!r} must look like host:port")
    return host, int(port)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="edubot-server",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("serve", help="run the API server (default)")
    add_key = sub.add_parser("add-key", help="mint an instructor API key")
    add_key.add_argument("--label", required=True,
                         help="who or what this key is for")
    args = parser.parse_args(argv)

    try:
        config = config_from_env()
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "add-key":
        service = Service(config)
        record, full = service.add_api_key(args.label)
        print(f"key id: {record.key_id}")
        print(f"bearer credential (store it now, it is not recoverable): {full}")
        return 0

    import uvicorn

    from .gateway import SimulatedChatPlatform, WallClock

    host, port = parse_bind(os.environ.get("EDUBOT_BIND", "127.0.0.1:8080"))
    # the bundled platform is simulated, but a live server runs on wall time
    platform = SimulatedChatPlatform(clock=WallClock(), seed=config.seed)
    service = Service(config, gateway=platform)
    app = create_app(service)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
