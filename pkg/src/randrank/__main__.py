from randrank.cli import main

main()
