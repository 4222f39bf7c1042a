from rds_core.main import run

if __name__ == "__main__":
    run()
