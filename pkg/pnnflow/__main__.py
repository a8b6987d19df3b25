from pnnflow.cli import app

app(prog_name="pnnflow")
