import argparse
import sys

from .app import ClassifierRuntime, LabelSpace, SidecarConfig, create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="estatewatch-sidecar",
        description="Serve a fine-tuned sequence-classification checkpoint "
        "over the estatewatch classifier wire protocol.",
    )
    parser.add_argument("--model-dir", required=True)
    parser.add_argument("--label-space", choices=["estate", "topic"], required=True)
    parser.add_argument("--listen", default="127.0.0.1:9090", help="host:port")
    parser.add_argument("--max-seq-len", type=int, default=128)
    args = parser.parse_args(argv)

    host, _, port_text = args.listen.rpartition(":")
    try:
        port = int(port_text)
        if not host:
            raise ValueError
    except ValueError:
        print(f"error: bad --listen value {args.listen!r}", file=sys.stderr)
        return 1

    config = SidecarConfig(
        model_dir=args.model_dir,
        label_space=LabelSpace(args.label_space),
        listen_host=host,
        listen_port=port,
        max_sequence_length=args.max_seq_len,
    )
    try:
        runtime = ClassifierRuntime(config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    import uvicorn

    uvicorn.run(create_app(runtime), host=host, port=port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
